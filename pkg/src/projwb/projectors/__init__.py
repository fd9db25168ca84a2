"""The three projection techniques: exact t-SNE, reduced UMAP, and LAMP."""

from .lamp import lamp
from .tsne import tsne
from .umap import umap

__all__ = ["tsne", "umap", "lamp"]
