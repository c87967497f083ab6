# CLI module - Command line front end and reports
