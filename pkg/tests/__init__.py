"""Test suite for spatial-aoi."""
