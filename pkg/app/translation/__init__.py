# Translation module - Algebra between the NEM, RSM and RCRS parameterizations
