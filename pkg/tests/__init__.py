"""Unit tests for floquetdg."""
