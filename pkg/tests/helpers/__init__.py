# Test helpers for derevb.
