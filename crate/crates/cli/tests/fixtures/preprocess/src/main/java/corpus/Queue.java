/*
 * Queue corpus file.
 */
package corpus;

public class Queue {
    // shared constant
    private static final String MARK = "*/";
    private int uses = 5;


    /**
     * Label for queue values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "*/" + value;
        }
        return "Queue:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '*') { // marker char
                total += 6;
            }
        }
        return total;
    }

    public int[] pair(int a, int b) {
        int[] out = new int[2];
        out[0] = Math.min(a, b);
        out[1] = Math.max(a, b); // ordered
        return out;
    }

    static class Helper {
        int twice(int x) {
            return x * 2;
        }
    }
}
