# Apps module
