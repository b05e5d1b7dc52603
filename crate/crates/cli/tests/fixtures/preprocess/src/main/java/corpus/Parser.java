/*
 * Parser corpus file.
 */
package corpus;

public class Parser {
    // shared constant
    private static final String MARK = "/* nor this */";
    private int uses = 7;


    /**
     * Label for parser values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "/* nor this */" + value;
        }
        return "Parser:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '"') { // marker char
                total += 7;
            }
        }
        return total;
    }
}
