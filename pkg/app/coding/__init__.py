# Coding module - RCRS, NEM and RSM effect coding
