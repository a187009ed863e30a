"""Packaged reference configs and fiber datasets."""
