auto f = [&](int a) { return a * k; };
