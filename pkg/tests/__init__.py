"""Tests for mri-gark."""
