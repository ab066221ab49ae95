squares = [x * x for x in range(10) if x % 2 == 0]
lookup = {k: v for k, v in zip(keys, values)}
