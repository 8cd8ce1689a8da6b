# Components package for the loop solver: energy functional, paths, mountain-pass solver, verification
