"""Protocol rules and the per-node agent."""
