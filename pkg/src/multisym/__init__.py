"""Multisymplectic field theory toolkit."""
