/*
 * Cipher corpus file.
 */
package corpus;

public class Cipher {
    // shared constant
    private static final String MARK = "http://example.org/x";
    private int uses = 15;


    /**
     * Label for cipher values.
     */
    public String label(int value) {
        // prefix with the marker
        if (value < 0) {
            return "http://example.org/x" + value;
        }
        return "Cipher:" + value; /* trailing block */
    }

    public static int score(String text, int bonus) {
        int total = bonus;


        for (int k = 0; k < text.length(); k++) {
            if (text.charAt(k) == '"') { // marker char
                total += 5;
            }
        }
        return total;
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
