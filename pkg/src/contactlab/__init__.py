"""Contact-process simulation on lattices, trees, half-lines and slabs via the
graphical representation, with statistical checks of domination and mixing."""

__version__ = "0.1.0"
