package toy;

public class Words {
    public static String classify(String word) {
        if (word.isEmpty()) {
            return "empty";
        }
        if (word.length() > 5) {
            return "long";
        }
        return "short";
    }
}
