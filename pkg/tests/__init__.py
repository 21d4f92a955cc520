"""Test suite for uvface."""
