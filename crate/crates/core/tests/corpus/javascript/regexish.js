const parts = line.split(",").map(s => s.trim());
