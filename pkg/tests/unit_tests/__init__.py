"""Unit tests of the meanfield_psro modules."""
