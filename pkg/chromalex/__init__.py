"""
chromalex: word-color embeddings in the perceptually uniform JzAzBz colorspace
"""
__version__ = '0.1.0'
