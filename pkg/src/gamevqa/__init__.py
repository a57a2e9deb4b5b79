"""No-reference quality prediction for cloud-gaming video.

Feature extraction combines noise-regularized spatial and temporal scene
statistics with pluggable 1024-d deep semantic embeddings; an epsilon-SVR
with RBF kernel maps the pooled 2180-d video vector to a quality score.
"""

__version__ = "0.1.0"
