/*
 * Email corpus file.
 */
package corpus;

public class Email {
    // shared constant
    private static final String MARK = "a \"quoted\" // word";
    private int uses = 14;


    /**
     * Label for email values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "a \"quoted\" // word" + value;
        }
        return "Email:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '\'') { // marker char
                total += 3;
            }
        }
        return total;
    }

    protected boolean within(long low, long high, long probe) {
        /* inclusive on both ends */
        return low <= probe && probe <= high;
    }
}
