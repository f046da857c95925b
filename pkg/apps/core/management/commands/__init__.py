# Make commands package