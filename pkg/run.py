"""
Entry point for the sparsity-diversity bounds CLI.
"""
from sparsity_bounds.main import app

if __name__ == "__main__":
    app()
