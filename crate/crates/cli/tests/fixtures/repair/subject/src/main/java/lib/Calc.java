package lib;

public class Calc {
    public int divide(int a, int b) {
        return a / b;
    }

    public int parse(String text) {
        return Integer.parseInt(text);
    }

    public boolean isEven(int n) {
        return n % 2 == 0;
    }

    public String sign(int n) {
        if (n > 0) {
            return "positive";
        }
        if (n < 0) {
            return "negative";
        }
        return "zero";
    }

    public long square(long x) {
        return x * x;
    }

    public double half(double x) {
        return x / 2;
    }

    public char initial(String word) {
        return word.charAt(0);
    }

    public String find(String key) {
        if (key.equals("x")) {
            return "found";
        }
        return null;
    }

    public int checked(int n) {
        if (n < 0) {
            throw new IllegalStateException("negative input: " + n);
        }
        return n;
    }

    public String describe(String name, int count) {
        return "The inventory item named " + name + " has a stock count of " + count;
    }
}
