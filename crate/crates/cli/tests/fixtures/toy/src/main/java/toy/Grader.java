package toy;

public class Grader {
    private final int passMark;

    public Grader(int passMark) {
        this.passMark = passMark;
    }

    public String grade(int score) {
        if (score < 0) {
            throw new IllegalArgumentException("negative score: " + score);
        }
        if (score >= 90) {
            return "A";
        }
        if (score >= passMark) {
            return "P";
        }
        return "F";
    }

    public int clamp(int value, int lo, int hi) {
        if (value < lo) {
            return lo;
        }
        if (value > hi) {
            return hi;
        }
        return value;
    }
}
