"""texcal: confidence calibration for synthetic texture classification."""
