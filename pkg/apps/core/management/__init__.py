# Make management package