import numpy as np

from conftest import random_rgb


def _post(client, rgb, **header_overrides):
    h, w = rgb.shape[:2]
    headers = {
        "X-Width": str(w),
        "X-Height": str(h),
        "Content-Type": "application/octet-stream",
    }
    headers.update(header_overrides)
    return client.post("/embed", content=rgb.tobytes(), headers=headers)


def test_health_contract(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "model": "ndnetgaming-densenet121", "dim": 1024}


def test_embed_returns_4096_bytes(client):
    resp = _post(client, random_rgb(0))
    assert resp.status_code == 200
    assert len(resp.content) == 4096
    vec = np.frombuffer(resp.content, dtype="<f4")
    assert vec.shape == (1024,)
    assert np.all(np.isfinite(vec))


def test_embed_deterministic_byte_identical(client):
    rgb = random_rgb(1)
    a = _post(client, rgb)
    b = _post(client, rgb)
    assert a.content == b.content


def test_embed_stateless_under_interleaving(client):
    r1, r2 = random_rgb(2), random_rgb(3)
    first = _post(client, r1).content
    _post(client, r2)
    _post(client, r2)
    assert _post(client, r1).content == first


def test_truncated_body_rejected(client):
    rgb = random_rgb(4)
    h, w = rgb.shape[:2]
    resp = client.post(
        "/embed",
        content=rgb.tobytes()[:-10],
        headers={"X-Width": str(w), "X-Height": str(h)},
    )
    assert resp.status_code == 400
    body = resp.json()
    assert "error" in body and "detail" in body


def test_missing_headers_rejected(client):
    resp = client.post("/embed", content=b"\x00" * 48)
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_bad_dimensions_rejected(client):
    resp = client.post(
        "/embed", content=b"", headers={"X-Width": "0", "X-Height": "5"}
    )
    assert resp.status_code == 400


def test_varying_input_sizes_same_output_length(client):
    for seed, (h, w) in enumerate([(16, 16), (48, 32), (80, 120)]):
        resp = _post(client, random_rgb(10 + seed, h, w))
        assert resp.status_code == 200
        assert len(resp.content) == 4096
