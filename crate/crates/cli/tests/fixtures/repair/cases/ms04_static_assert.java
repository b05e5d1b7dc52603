package lib;

import org.junit.Test;

public class CalcTest {
    @Test
    public void evenNumbers() {
        Calc calc = new Calc();
        assertTrue(calc.isEven(4));
        assertFalse(calc.isEven(7));
    }
}
