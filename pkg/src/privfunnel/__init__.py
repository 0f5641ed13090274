"""Privacy funnel solver."""
