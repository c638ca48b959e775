# Numerical services behind the fronthaul management commands
