# Designs module - Factors, sliding tables, planning matrices and bundled fixtures
