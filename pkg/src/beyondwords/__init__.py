"""Theme extraction from social media posts: embed, compress, factorize, cluster, refine."""

__version__ = "0.1.0"
