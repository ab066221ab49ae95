name = "world"
print(f"hello {name}!")
print('single' + "double")
