const cfg = {
  port: 8080,
  hosts: ["a", "b"],
};
