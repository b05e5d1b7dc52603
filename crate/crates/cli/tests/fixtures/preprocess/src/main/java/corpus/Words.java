/*
 * Words corpus file.
 */
package corpus;

public class Words {
    // shared constant
    private static final String MARK = "tab\tand /*star*/";
    private int uses = 16;


    /**
     * Label for words values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "tab\tand /*star*/" + value;
        }
        return "Words:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '/') { // marker char
                total += 7;
            }
        }
        return total;
    }

    protected boolean within(long low, long high, long probe) {
        /* inclusive on both ends */
        return low <= probe && probe <= high;
    }
}
