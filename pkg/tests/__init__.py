# Empty