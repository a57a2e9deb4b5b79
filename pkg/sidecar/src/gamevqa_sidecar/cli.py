"""`gamevqa-sidecar serve` entry point."""

from __future__ import annotations

import sys

import click

from .model import SidecarConfig, WeightsError


@click.group()
def main():
    """Deep-embedding inference sidecar."""


@main.command()
@click.option("--weights", "weights_path", required=True, type=click.Path())
@click.option("--port", type=int, default=8731)
@click.option("--host", default="127.0.0.1")
@click.option("--input-size", default="768x432", help="HxW, each divisible by 32")
def serve(weights_path, port, host, input_size):
    """Serve /health and /embed until interrupted."""
    import uvicorn

    from .app import create_app

    h, _, w = input_size.lower().partition("x")
    try:
        config = SidecarConfig(weights_path=weights_path, port=port, input_size=(int(h), int(w)))
        app = create_app(config)
    except (WeightsError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
