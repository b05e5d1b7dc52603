package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void parseWord() {
        Calc calc = new Calc();
        calc.parse("abc");
    }
}
