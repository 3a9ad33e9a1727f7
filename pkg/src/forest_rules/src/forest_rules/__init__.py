"""forest-rules

Random forest rule extraction and selection of small, accurate rule subsets.
"""

__version__ = "0.1.0"
