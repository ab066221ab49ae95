for i in range(n):
    if i % 3:
        continue
    else:
        total += i
print(total)
