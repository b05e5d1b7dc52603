/*
 * Bits corpus file.
 */
package corpus;

public class Bits {
    // shared constant
    private static final String MARK = "/* nor this */";
    private int uses = 19;


    /**
     * Label for bits values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "/* nor this */" + value;
        }
        return "Bits:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '"') { // marker char
                total += 2;
            }
        }
        return total;
    }
}
