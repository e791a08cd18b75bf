"""Demand-side management simulator with tree coordination and slot exchange."""
