package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void halfIsPositive() {
        Calc calc = new Calc();
        assertFalse(calc.half(8.0) > 0);
    }
}
