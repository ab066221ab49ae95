List<Map<String, Integer>> rows = new ArrayList<>();
rows.add(new HashMap<>());
