"""HTTP service exposing the solver; the CLI talks to it or runs the same operations in-process."""
