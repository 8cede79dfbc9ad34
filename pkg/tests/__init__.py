"""Test suite for derevb."""
