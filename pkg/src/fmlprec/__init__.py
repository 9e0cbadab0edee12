"""All-MLP sequential recommender with learnable frequency-domain filters."""
__version__ = "0.1.0"
