"""Event engine and end-to-end scenario runs."""
