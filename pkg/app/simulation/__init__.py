# Simulation module - Synthetic surfaces and strategy comparison
