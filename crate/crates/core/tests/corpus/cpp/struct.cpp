struct Point {
    int x, y;
};
Point p{1, 2};
