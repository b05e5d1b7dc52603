/*
 * Cache corpus file.
 */
package corpus;

public class Cache {
    // shared constant
    private static final String MARK = "tab\tand /*star*/";
    private int uses = 10;


    /**
     * Label for cache values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "tab\tand /*star*/" + value;
        }
        return "Cache:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '\'') { // marker char
                total += 2;
            }
        }
        return total;
    }

    protected boolean within(long low, long high, long probe) {
        /* inclusive on both ends */
        return low <= probe && probe <= high;
    }
}
