"""Test suite for the meanfield_psro package."""
