"""Split a superimposed two-structure image into its channels with lateral-context hierarchical autoencoders."""

__version__ = "0.1.0"
