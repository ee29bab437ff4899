"""Frequency-spectrum representation and fusion network on a numpy autodiff core."""
