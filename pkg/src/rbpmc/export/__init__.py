"""File export for samples, runs, censuses and sweep reports."""
