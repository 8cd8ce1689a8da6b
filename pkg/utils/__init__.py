# Utilities package for the loop solver: geometry, fields, winding numbers, files, rendering
