"""synhub contract registry utilities."""
