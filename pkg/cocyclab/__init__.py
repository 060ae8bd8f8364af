"""cocyclab - A numerical lab for quasiperiodic SL(2,R) cocycles."""

__version__ = "0.1.0"
