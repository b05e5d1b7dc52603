package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void squareIsSmall() {
        Calc calc = new Calc();
        assertTrue(calc.square(5L) < 10L);
    }
}
