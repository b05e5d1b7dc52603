/*
 * Ledger corpus file.
 */
package corpus;

public class Ledger {
    // shared constant
    private static final String MARK = "// not a comment";
    private int uses = 0;


    /**
     * Label for ledger values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "// not a comment" + value;
        }
        return "Ledger:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '/') { // marker char
                total += 8;
            }
        }
        return total;
    }

    protected boolean within(long low, long high, long probe) {
        /* inclusive on both ends */
        return low <= probe && probe <= high;
    }

    public static float toFloat(final String str) {
        return toFloat(str, 0.0f);
    }

    public static float toFloat(final String str, final float defaultValue) {
        if (str == null) {
            return defaultValue;
        }
        return Float.parseFloat(str);
    }
}
