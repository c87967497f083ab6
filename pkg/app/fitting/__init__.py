# Fitting module - Least squares with inference and collinearity diagnostics
