package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void negativeSign() {
        Calc calc = new Calc();
        String s = calc.sign(-4);
        assertNull(s);
        assertEquals(8, s.length());
    }
}
