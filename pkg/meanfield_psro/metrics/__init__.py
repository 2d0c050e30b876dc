"""Initialize metrics."""
