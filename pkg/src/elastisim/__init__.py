"""Simulator and benchmark harness for an elastic, containerised IoT ingest pipeline."""

__version__ = "0.1.0"
