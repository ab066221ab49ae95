char c = '{';
String s = "}";
