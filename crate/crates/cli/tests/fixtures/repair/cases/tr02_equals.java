package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void negativeIsPositive() {
        Calc calc = new Calc();
        assertTrue(calc.sign(-1).equals("positive"));
    }
}
