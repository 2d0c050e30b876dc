"""Initialize regret."""
